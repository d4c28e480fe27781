# Generated by Django 5.0.6 on 2026-10-12 09:14

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='BenchRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(max_length=4)),
                ('censoring_target', models.FloatField()),
                ('replicates', models.PositiveIntegerField()),
                ('completed', models.PositiveIntegerField(default=0)),
                ('seed', models.BigIntegerField()),
                ('methods', models.JSONField(default=list)),
                ('report', models.JSONField()),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
